fn main() {
    std::process::exit(hdg_stokes::cli::main_with_args(std::env::args_os()));
}
