fn main() {
    std::process::exit(hardballs_cli::run(std::env::args_os()));
}
