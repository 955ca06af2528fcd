fn main() {
    std::process::exit(voi_core::cli::run(std::env::args_os()));
}
