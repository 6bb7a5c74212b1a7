fn main() {
    std::process::exit(relstab::cli::main_with_args(std::env::args_os()));
}
