fn main() {
    std::process::exit(otr_decomp::cli::main_with_args(std::env::args_os()));
}
