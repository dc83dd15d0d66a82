fn main() {
    std::process::exit(pmp_cruise::cli::run(std::env::args_os()));
}
