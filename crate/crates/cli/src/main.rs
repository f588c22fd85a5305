fn main() {
    std::process::exit(sublevel_cli::run(std::env::args_os()));
}
