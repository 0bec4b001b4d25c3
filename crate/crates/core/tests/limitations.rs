use shadowad::limitation_corpus::{builtin_dir, load_dir, run_case};

#[test]
fn every_case_reproduces_its_wrong_dot() {
    let cases = load_dir(&builtin_dir()).unwrap();
    assert!(cases.len() >= 5);
    for c in &cases {
        let o = run_case(c).unwrap();
        assert!(o.pass, "{}: value {} dot {} (expected wrong dot {})", c.name, o.value, o.dot, c.header.wrong_dot);
    }
}
