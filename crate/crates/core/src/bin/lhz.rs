fn main() {
    std::process::exit(lhz::pipeline::cli::main_from_env());
}
