fn main() {
    std::process::exit(pbft_markov_cli::run(std::env::args_os()));
}
