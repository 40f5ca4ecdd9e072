//! Writes a fake /proc/sys tree, reads it back, and round-trips the
//! configuration through sysctl.conf syntax.
//!
//! Pass a directory to read a real tree instead, e.g. `/proc/sys`.

use bdptune::sysctl::{emit_config, parse_sysctl_conf, read_snapshot, write_tree};
use bdptune::TcpBufferConfig;

fn main() -> bdptune::Result<()> {
    let snapshot = match std::env::args().nth(1) {
        Some(root) => read_snapshot(root)?,
        None => {
            let dir = std::env::temp_dir().join(format!("bdptune-sysctl-{}", std::process::id()));
            write_tree(
                &dir,
                &TcpBufferConfig::linux_defaults().with_max_buffers(4 << 20),
            )?;
            let snap = read_snapshot(&dir)?;
            let _ = std::fs::remove_dir_all(&dir);
            snap
        }
    };

    println!("read from {}", snapshot.source_root.display());
    for (key, raw) in &snapshot.raw {
        println!("  {key} = {raw}");
    }
    let conf = emit_config(&snapshot.config);
    print!("{conf}");
    assert_eq!(parse_sysctl_conf(&conf)?, snapshot.config);
    println!("round trip ok");
    Ok(())
}
