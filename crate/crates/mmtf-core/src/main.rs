fn main() {
    std::process::exit(mmtf_core::cli::run_from(std::env::args_os()));
}
