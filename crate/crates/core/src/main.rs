fn main() {
    std::process::exit(weblog_miner::cli::run(std::env::args_os()));
}
