fn main() {
    wayfind_cli::init_logging();
    std::process::exit(wayfind_cli::run(std::env::args_os()));
}
