fn main() {
    std::process::exit(avery_sim::cli::main_with_args(std::env::args_os()));
}
