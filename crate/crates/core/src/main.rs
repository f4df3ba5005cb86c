fn main() {
    std::process::exit(sqrtreg::cli::run(std::env::args_os()));
}
