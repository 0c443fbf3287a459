fn main() {
    std::process::exit(bayes_lens::cli::main_with_args(std::env::args_os()));
}
