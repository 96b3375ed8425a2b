"""Writes the shipped case files from per-unit data.

Run from the repository root: python3 scripts/gen_cases.py
"""

import math

OMEGA = 2 * math.pi * 60.0
S_BASE = 100.0


def zb(kv):
    return kv * kv / S_BASE


def line(i, a, b, kv, r, x, bsh=0.0):
    z = zb(kv)
    return (
        f"[[lines]]\nid = {i}\nfrom_bus = {a}\nto_bus = {b}\n"
        f"resistance = {r * z:.10g}\ninductance = {x * z / OMEGA:.10g}\n"
        f"shunt_capacitance = {bsh / (OMEGA * z):.10g}\n"
    )


def bus(i, kv, c_pu=0.0, b_pu=0.0, g_pu=0.0):
    z = zb(kv)
    c = c_pu / z + b_pu / (OMEGA * z)
    out = f"[[buses]]\nid = {i}\nnominal_kv = {kv}\nshunt_capacitance = {c:.10g}\n"
    if g_pu:
        out += f"shunt_conductance = {g_pu / z:.10g}\n"
    return out


def rl_load(i, b, kv, p_mw, q_mvar):
    s = complex(p_mw, q_mvar) / S_BASE
    zl = s / abs(s) ** 2
    z = zb(kv)
    return (
        f"[[loads]]\nid = {i}\nbus = {b}\nkind = \"rl\"\n"
        f"resistance = {zl.real * z:.10g}\ninductance = {zl.imag * z / OMEGA:.10g}\n"
    )


def rc_load(i, b, kv, p_mw, q_cap_mvar):
    z = zb(kv)
    r = z / (p_mw / S_BASE)
    c = (q_cap_mvar / S_BASE) / (OMEGA * z)
    return f"[[loads]]\nid = {i}\nbus = {b}\nkind = \"rc\"\nresistance = {r:.10g}\ncapacitance = {c:.10g}\n"


KUNDUR = dict(
    ra=0.0025, xl=0.2, xmd=1.6, xmq=1.5, xlfd=0.10667, rfd=5.659e-4,
    xl1d=0.1, r1d=0.0115, xl1q=0.45652, r1q=0.012974, xl2q=0.058333, r2q=0.0141,
)


def generator(i, b, mva, h, d, p_mw, v_set, slack=False, gov=None, exc=None):
    out = f"[[generators]]\nid = {i}\nbus = {b}\nmva = {mva}\nh = {h}\nd = {d}\n"
    for k, v in KUNDUR.items():
        out += f"{k} = {v}\n"
    out += f"p_mw = {p_mw}\nv_set = {v_set}\n"
    if slack:
        out += "slack = true\n"
    gov = gov or dict(r=0.05, t1=0.5, t2=2.1, t3=7.0, vmax=1.2, vmin=0.0, dt=0.0)
    exc = exc or dict(ta_tb=0.1, tb=10.0, k=50.0, te=0.1, emin=-5.0, emax=5.0)
    out += "[generators.governor]\n" + "".join(f"{k} = {v}\n" for k, v in gov.items())
    out += "[generators.exciter]\n" + "".join(f"{k} = {v}\n" for k, v in exc.items())
    return out


def two_area():
    parts = [
        "# Two-area system with the generator at bus 1 replaced by a\n"
        "# grid-following inverter.  SI units; generated by scripts/gen_cases.py.\n\n"
        "[system]\nname = \"two-area-ibr\"\nfrequency_hz = 60.0\nbase_mva = 100.0\nreference = \"gen2\"\n"
    ]
    # the inverter bus carries its output filter's damping resistance
    parts.append(bus(1, 20.0, c_pu=4e-4, g_pu=0.1))
    for i in (2, 3, 4):
        parts.append(bus(i, 20.0, c_pu=4e-4))
    for i in (5, 6, 8, 10, 11):
        parts.append(bus(i, 230.0, c_pu=5e-4))
    parts.append(bus(7, 230.0, c_pu=5e-4, b_pu=2.0))
    parts.append(bus(9, 230.0, c_pu=5e-4, b_pu=3.5))
    xt = 0.15 / 9.0
    lid = 1
    for a, b in ((1, 5), (2, 6), (3, 11), (4, 10)):
        parts.append(line(lid, a, b, 20.0, 1e-4, xt))
        lid += 1
    # transmission corridors with X/R = 30
    x, bb = 1e-3, 1.75e-3
    r = x / 30.0
    for a, b, km in ((5, 6, 25), (6, 7, 10), (7, 8, 110), (7, 8, 110), (8, 9, 110), (8, 9, 110), (9, 10, 10), (10, 11, 25)):
        parts.append(line(lid, a, b, 230.0, r * km, x * km, bb * km))
        lid += 1
    parts.append(rl_load(1, 7, 230.0, 967.0, 100.0))
    parts.append(rl_load(2, 9, 230.0, 1767.0, 100.0))
    parts.append(generator(2, 2, 900.0, 6.5, 20.0, 700.0, 1.01))
    parts.append(generator(3, 3, 900.0, 6.175, 20.0, 719.0, 1.03, slack=True))
    parts.append(generator(4, 4, 900.0, 6.175, 20.0, 700.0, 1.01))
    parts.append(
        "[[ibrs]]\nid = 1\nbus = 1\nmva = 900.0\np_mw = 700.0\nq_mvar = 100.0\n"
        "pll_kp = 20.0\npll_ki = 100.0\ncurrent_kp = 0.3\ncurrent_ki = 3.0\n"
        "power_kp = 0.1\npower_ki = 5.0\nfreq_droop = 20.0\nvolt_droop = 2.0\n"
        "filter_r = 0.003\nfilter_x = 0.15\nmeas_tc = 0.1\n"
    )
    return "\n".join(parts)


def desk():
    kv = 20.0
    parts = [
        "# Four-node test network fed by one machine.  SI units; generated by\n"
        "# scripts/gen_cases.py.\n\n"
        "[system]\nname = \"desk\"\nfrequency_hz = 60.0\nbase_mva = 100.0\nreference = \"gen1\"\n"
    ]
    for i in (1, 2, 3, 4):
        parts.append(bus(i, kv, c_pu=4e-4))
    parts.append(line(1, 1, 2, kv, 0.01, 0.05, 0.02))
    parts.append(line(2, 2, 3, kv, 0.012, 0.06, 0.02))
    parts.append(line(3, 3, 4, kv, 0.01, 0.05, 0.02))
    parts.append(line(4, 2, 4, kv, 0.015, 0.08, 0.02))
    parts.append(rl_load(1, 3, kv, 60.0, 20.0))
    parts.append(rc_load(2, 4, kv, 40.0, 10.0))
    parts.append(generator(1, 1, 200.0, 3.5, 2.0, 100.0, 1.02, slack=True))
    return "\n".join(parts)


def fault(bus_id, kv, t_on, cycles, g_pu=50.0):
    g = g_pu / zb(kv)
    t_off = t_on + cycles / 60.0
    return (
        f"[[events]]\ntime = {t_on}\nkind = \"fault\"\nbus = {bus_id}\nconductance = {g:.10g}\n\n"
        f"[[events]]\ntime = {t_off!r}\nkind = \"clear_fault\"\nbus = {bus_id}\n"
    )


if __name__ == "__main__":
    with open("cases/two_area.toml", "w") as f:
        f.write(two_area())
    with open("cases/desk.toml", "w") as f:
        f.write(desk())
    with open("cases/two_area_s1.toml", "w") as f:
        f.write("# Five-cycle three-phase fault at bus 8, cleared without tripping.\n\n")
        f.write(fault(8, 230.0, 1.0, 5))
    with open("cases/desk_fault.toml", "w") as f:
        f.write("# Five-cycle three-phase fault at bus 3.\n\n")
        f.write(fault(3, 20.0, 0.1, 5, g_pu=20.0))
