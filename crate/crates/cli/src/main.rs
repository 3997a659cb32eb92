fn main() {
    std::process::exit(emu_cli::run(std::env::args_os()));
}
