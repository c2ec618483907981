fn main() {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        args = ["fig1","fig2","fig3","fig4","fig5","fig6","fig7","fig8_bad","fig8_cast","fig8_nocast_ok","cyclic_hazard","encap_update","sv_escape","empty"].iter().map(|s| s.to_string()).collect();
    }
    for name in &args {
        let path = format!("corpus/{}.pawns", name);
        let src = std::fs::read_to_string(&path).unwrap();
        let checked = pawns_core::check_source(&src);
        let codes: Vec<String> = checked.diagnostics.iter().map(|d| format!("{}@{}", d.code, d.span.line)).collect();
        println!("=== {} errors={} diags={:?}", name, checked.has_errors(), codes);
        if std::env::var("VERBOSE").is_ok() {
            for d in &checked.diagnostics {
                print!("{}", pawns_core::diag::render_diagnostic(d, &path, &src));
            }
        }
        if let Some(ana) = &checked.analysis {
            for (f, (v, t)) in &ana.stmt_visits {
                if v != t { println!("  VISIT MISMATCH {}: {} vs {}", f, v, t); }
            }
        }
    }
}
