fn main() {
    std::process::exit(trlkit::run(std::env::args_os()));
}
