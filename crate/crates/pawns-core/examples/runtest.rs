use pawns_core::interp::HostValue;

fn main() {
    // fig2: run main, expect "43\n"
    let src = std::fs::read_to_string("corpus/fig2.pawns").unwrap();
    let checked = pawns_core::check_source(&src);
    assert!(!checked.has_errors());
    let stats = pawns_core::run_main(&checked, true).unwrap();
    println!("fig2 stdout={:?} events={}", stats.stdout, stats.events.len());

    // fig6: run main, expect "6\n" (nested re-binding path: right subtree nonempty)
    let src = std::fs::read_to_string("corpus/fig6.pawns").unwrap();
    let checked = pawns_core::check_source(&src);
    assert!(!checked.has_errors());
    let stats = pawns_core::run_main(&checked, true).unwrap();
    println!("fig6 stdout={:?}", stats.stdout);

    // fig3/fig1 equivalence on one input
    let src = std::fs::read_to_string("corpus/fig5.pawns").unwrap();
    let s = pawns_core::Session::load(&src).unwrap();
    let out = s.call("list_bst_du", &[HostValue::list(&[2, 1, 3])]).unwrap();
    println!("list_bst_du [2,1,3] = {:?}", out.value);

    // cords: build Branch(Leaf [1,2], Leaf [3]) via constructors, flatten.
    let leaf12 = HostValue::Ctor("Leaf".into(), vec![HostValue::list(&[1, 2])]);
    let leaf3 = HostValue::Ctor("Leaf".into(), vec![HostValue::list(&[3])]);
    let cord = HostValue::Ctor("Branch".into(), vec![leaf12, leaf3]);
    let out = s.call_with_oracle("cord_list", &[cord]).unwrap();
    println!("cord_list = {:?}", out.value);
    println!("cons allocs during cord_list: {:?}", out.ctor_allocs.get("Cons"));
    println!("oracle events: {}", out.events.len());

    // fig7: concrete builders equal the pure ones
    let src = std::fs::read_to_string("corpus/fig7.pawns").unwrap();
    let s7 = pawns_core::Session::load(&src).unwrap();
    let a = s7.call("list_bst_pure", &[HostValue::list(&[5, 3, 9])]).unwrap();
    let b = s7.call("list_bst_concrete", &[HostValue::list(&[5, 3, 9])]).unwrap();
    println!("pure==concrete: {}", a.value == b.value);
}
