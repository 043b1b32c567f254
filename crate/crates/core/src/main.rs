fn main() {
    std::process::exit(sparsity_audit::cli::run(std::env::args_os()));
}
