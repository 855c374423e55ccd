fn main() {
    std::process::exit(mithril_cli::main_with_args(std::env::args_os()));
}
