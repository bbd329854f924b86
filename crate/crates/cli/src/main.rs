fn main() {
    std::process::exit(vgd_cli::run(std::env::args_os()));
}
