fn main() {
    std::process::exit(seasonal_lv_cli::run(std::env::args_os()));
}
