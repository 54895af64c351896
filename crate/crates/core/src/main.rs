fn main() {
    std::process::exit(aeroforecast::cli::run(std::env::args_os()));
}
