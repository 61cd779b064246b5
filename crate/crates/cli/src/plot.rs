//! Gnuplot scripts written next to the CSV outputs. They read the CSV by a
//! relative path, so run them from the output directory.

/// Output fluxes, coherence and concurrence densities against time.
pub fn dynamics_script(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't Gamma_wg'\n\
         set multiplot layout 2,1\n\
         set ylabel 'flux'\n\
         plot '{csv}' using 1:2 with lines lw 2 title 'f_R', \\\n\
         \x20    '' using 1:3 with lines lw 2 title 'f_L', \\\n\
         \x20    '' using 1:4 with lines dt 2 title 'f_loss'\n\
         set ylabel 'density'\n\
         plot '{csv}' using 1:5 with lines lw 2 title 'Re coherence', \\\n\
         \x20    '' using 1:7 with lines lw 2 title 'concurrence'\n\
         unset multiplot\n"
    )
}

/// Fidelity, concurrence and the two output excitations against the swept
/// parameter.
pub fn sweep_script(csv: &str, column: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel '{column}'\n\
         set ylabel 'F, C'\n\
         set yrange [0:1.05]\n\
         plot '{csv}' using 2:5 with linespoints lw 2 title 'F', \\\n\
         \x20    '' using 2:7 with linespoints lw 2 title 'C', \\\n\
         \x20    '' using 2:3 with lines dt 2 title 'e_R', \\\n\
         \x20    '' using 2:4 with lines dt 2 title 'e_L'\n"
    )
}
