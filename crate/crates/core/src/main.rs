fn main() {
    std::process::exit(flowmorph::cli::run(std::env::args_os()));
}
