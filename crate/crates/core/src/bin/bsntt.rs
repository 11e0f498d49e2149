fn main() {
    std::process::exit(bitslice_ntt::cli::run(std::env::args_os()));
}
