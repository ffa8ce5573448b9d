fn main() {
    std::process::exit(blindmix::harness::cli::run(std::env::args_os()));
}
