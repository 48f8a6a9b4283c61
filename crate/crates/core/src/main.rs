fn main() {
    let outcome = rubriclab::cli::run(std::env::args_os());
    std::process::exit(outcome.exit_code);
}
