fn main() {
    std::process::exit(comb_qmc::cli::main_with_args(std::env::args_os()));
}
