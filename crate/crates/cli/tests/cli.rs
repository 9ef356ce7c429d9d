use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_collage-synth"));
    c.env("NO_COLOR", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("gen.toml");
    fs::write(
        &path,
        "master_seed = 3\nshard_size = 5\n[params]\ncanvases = [[96, 96]]\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn gen_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let o = run(&["gen", "-c", &cfg, "--out", out_s, "--count.inpaint=6", "--count.seg_det", "2", "--jobs", "2"]);
    assert!(o.status.success(), "{}", text(&o));
    let t = text(&o);
    assert!(t.contains("samples/s"), "{t}");
    assert!(t.contains("inpaint"));
    assert!(out.join("shard-00001").is_dir());

    let o = run(&["validate", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("PASS"));

    // flip a byte in the middle of one image
    let png = out.join("shard-00000/00000000_tgt.png");
    let mut bytes = fs::read(&png).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    fs::write(&png, bytes).unwrap();
    let o = run(&["validate", out_s]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("1 failure(s)"), "{}", text(&o));
}

#[test]
fn empty_gen_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty");
    let o = run(&["gen", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("0 samples"));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--count.nope=3"]).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "shard_size = 0\n").unwrap();
    let o = run(&["gen", "-c", bad.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("shard_size"), "{}", text(&o));
    let o = run(&["gen", "-c", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    // a directory without shards cannot be validated
    let o = run(&["validate", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn preview_writes_a_sheet_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let sheet = dir.path().join("sheet.png");
    let o = run(&["preview", "-c", &cfg, "--task", "instruct_edit", "-n", "4", "-o", sheet.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let img = image_dims(&sheet);
    assert_eq!(img, (2 * 256 + 12, 4 * 256 + 20));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    let o = run(&["preview", "--task", "drag_edit", "-n", "0", "-o", sheet.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn image_dims(p: &Path) -> (u32, u32) {
    // PNG IHDR: width and height are the big-endian words at offset 16
    let b = fs::read(p).unwrap();
    assert_eq!(&b[1..4], b"PNG");
    let w = u32::from_be_bytes(b[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(b[20..24].try_into().unwrap());
    (w, h)
}

#[test]
fn assets_check_and_export() {
    let o = run(&["assets", "check"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("fingerprint"));
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("lib");
    let o = run(&["assets", "export", root.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let o = run(&["assets", "check", root.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let builtin_fp = fingerprint(&run(&["assets", "check"]));
    assert_eq!(fingerprint(&o), builtin_fp);
    fs::write(root.join("stickers/broken.png"), b"\x89PNG\r\n\x1a\nxx").unwrap();
    let o = run(&["assets", "check", root.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("broken.png"));
}

fn fingerprint(o: &Output) -> String {
    text(o).lines().find(|l| l.starts_with("fingerprint")).unwrap().to_owned()
}
