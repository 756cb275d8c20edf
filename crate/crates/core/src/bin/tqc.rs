fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(tqc_core::cli::run(&argv));
}
