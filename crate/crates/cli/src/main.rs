fn main() {
    std::process::exit(hazardlab::run(std::env::args_os()));
}
