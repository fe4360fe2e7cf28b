fn main() {
    std::process::exit(lip_rr::cli::run(std::env::args_os()));
}
