fn main() {
    std::process::exit(vlasov_renorm::cli::run(std::env::args_os()));
}
