fn main() {
    std::process::exit(netprice_cli::run_from_args(std::env::args_os()));
}
