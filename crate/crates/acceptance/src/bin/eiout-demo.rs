//! `eiout-demo EXECID FILE`: answers with an eiout document touching every
//! command kind, aimed at the given input file.

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let [_, execid, file, ..] = args.as_slice() else {
        eprintln!("usage: eiout-demo EXECID FILE");
        std::process::exit(64);
    };
    print!(
        r#"<eiout>
<eicommands>
<printonconsole><content format="text">checking {file}</content></printonconsole>
<printonconsole consoleid="1" consoletitle="Welcome"><content format="text">Hello World</content></printonconsole>
<addmarker dest="{file}" outclass="warning"><lines><line from="4"/></lines><content format="text">unused variable</content></addmarker>
<highlightlines dest="{file}" outclass="error"><lines><line from="5" to="10"/></lines></highlightlines>
<dialogbox outclass="info" boxtitle="Summary"><content format="html">&lt;b&gt;2 findings&lt;/b&gt;</content></dialogbox>
<download execid="{execid}" filename="report.txt"/>
</eicommands>
<eiactions>
<oncodelineclick dest="{file}" outclass="info">
  <lines><line from="17"/></lines>
  <eicommands>
    <highlightlines><lines><line from="17" to="19"/></lines></highlightlines>
    <dialogbox boxtitle="Hey!"><content format="text">some message</content></dialogbox>
  </eicommands>
</oncodelineclick>
</eiactions>
</eiout>
"#
    );
}
