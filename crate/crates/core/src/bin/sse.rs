fn main() {
    env_logger::init();
    std::process::exit(sse_curate::cli::main());
}
