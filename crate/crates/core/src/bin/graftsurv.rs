fn main() {
    std::process::exit(graftsurv::cli::run(std::env::args_os()));
}
