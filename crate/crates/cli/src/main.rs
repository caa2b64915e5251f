fn main() {
    std::process::exit(bns_emm_cli::run(std::env::args_os()));
}
