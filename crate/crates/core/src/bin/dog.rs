fn main() {
    std::process::exit(dog_kgqa::cli::run(std::env::args_os()));
}
