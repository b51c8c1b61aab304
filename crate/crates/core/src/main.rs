fn main() {
    std::process::exit(homoplan::harness::execute(std::env::args_os()));
}
