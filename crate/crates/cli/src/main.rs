fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    std::process::exit(zipzip_cli::run::run(&args, &mut stdout, &mut stderr));
}
