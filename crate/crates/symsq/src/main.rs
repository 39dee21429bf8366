fn main() {
    std::process::exit(symsq::cli::main_with_args(std::env::args()));
}
