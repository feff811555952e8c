fn main() {
    let args: Vec<String> = std::env::args().collect();
    let quick = args.iter().any(|a| a == "--quick");
    let only: Option<usize> = args.iter().position(|a| a == "--only").map(|i| args[i+1].parse().unwrap());
    let mut all = true;
    for (id, _) in hyplap::verify::CHECK_NAMES {
        if let Some(o) = only { if o != id { continue; } }
        let out = hyplap::verify::run_check(id, quick, 12345);
        println!("{}", out.line());
        all &= out.passed;
    }
    println!("overall: {}", if all { "PASS" } else { "FAIL" });
}
