//! Matplotlib scripts written next to the CSV output with `--plot`. They
//! read the CSV files relative to their own location.

const HEADER: &str = "import csv, glob, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(here, name)) as f:
        rows = list(csv.reader(f))
    cols = {h: [float(r[i]) for r in rows[1:]] for i, h in enumerate(rows[0])}
    return cols

";

pub fn coeffs(stem: &str) -> String {
    format!(
        "{HEADER}c = load('{stem}.csv')
fig, ax = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
for a, key in zip(ax.flat, ['omega', 'd1', 'sigma_q', 'd_fpe']):
    a.plot(c['t'], c[key])
    a.set_ylabel(key)
for a in ax[1]:
    a.set_xlabel('t')
fig.tight_layout()
fig.savefig(os.path.join(here, '{stem}.png'), dpi=150)
"
    )
}

pub fn fpe(stem: &str) -> String {
    format!(
        "{HEADER}fig, ax = plt.subplots(figsize=(7, 4.5))
for path in sorted(glob.glob(os.path.join(here, '{stem}_*.csv'))):
    c = load(os.path.basename(path))
    line, = ax.plot(c['q'], c['p'], label=os.path.basename(path))
    if 'p_exact' in c:
        ax.plot(c['q'], c['p_exact'], '--', color=line.get_color())
ax.set_xlabel('q')
ax.set_ylabel('p(q, t)')
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(here, '{stem}.png'), dpi=150)
"
    )
}

pub fn sde(files: &[String]) -> String {
    let list = files.iter().map(|f| format!("'{f}'")).collect::<Vec<_>>().join(", ");
    format!(
        "{HEADER}fig, ax = plt.subplots(1, 2, figsize=(10, 4))
for name in [{list}]:
    c = load(name)
    ax[0].errorbar(c['t'], c['mean'], yerr=c['se_mean'], label=name)
    ax[1].errorbar(c['t'], c['var'], yerr=c['se_var'], label=name)
ax[0].set_ylabel('mean')
ax[1].set_ylabel('variance')
for a in ax:
    a.set_xlabel('t')
    a.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(here, 'sde.png'), dpi=150)
"
    )
}
