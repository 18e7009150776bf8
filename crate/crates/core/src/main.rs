fn main() {
    std::process::exit(fockcascade::cli::main_with(std::env::args_os()));
}
