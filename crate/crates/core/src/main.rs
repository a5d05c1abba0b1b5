fn main() {
    std::process::exit(mforge::cli::run(std::env::args_os()));
}
