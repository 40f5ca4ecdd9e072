//! Runs the advisor for every preset against stock Linux settings and prints
//! the keys it would change, plus the matching sysctl.conf snippet.

use bdptune::model::{advise, apply, NicConfig, Preset};
use bdptune::sysctl::{emit_link_commands, emit_sysctl_conf};
use bdptune::{ModelParams, TcpBufferConfig};

fn main() -> bdptune::Result<()> {
    let tcp = TcpBufferConfig::linux_defaults();
    let nic = NicConfig::default();
    let params = ModelParams::default();

    for preset in [
        Preset::HomeLan,
        Preset::HomeDsl,
        Preset::Dc1g,
        Preset::Dc10g,
    ] {
        // home-dsl has no canonical RTT, so give it a typical one
        let rtt = preset.base_rtt_s().or(Some(0.02));
        let link = preset.link(rtt)?;
        let recs = advise(&link, &tcp, &nic, &params);
        println!("== {}", preset.name());
        for r in recs.iter().filter(|r| r.changed) {
            println!("  {:<30} {} -> {}", r.key.name(), r.current, r.recommended);
        }
        if recs.iter().any(|r| r.changed) {
            print!("{}", emit_sysctl_conf(&recs));
            let (_, nic2) = apply(&recs, &tcp, &nic)?;
            for cmd in emit_link_commands("eth0", &nic2)? {
                println!("{cmd}");
            }
        } else {
            println!("  nothing to change");
        }
    }
    Ok(())
}
