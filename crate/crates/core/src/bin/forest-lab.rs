fn main() {
    std::process::exit(forest_lab::harness::cli::main_with(std::env::args_os()));
}
