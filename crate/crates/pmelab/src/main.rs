fn main() {
    std::process::exit(pmelab::cli::dispatch(std::env::args_os()));
}
