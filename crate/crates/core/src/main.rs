fn main() {
    std::process::exit(raat::cli::dispatch(std::env::args_os()));
}
