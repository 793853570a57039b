fn main() {
    std::process::exit(freqid::cli::run(std::env::args_os()));
}
