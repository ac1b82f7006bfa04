fn main() {
    std::process::exit(gated_squid::cli::main_with(std::env::args_os()));
}
