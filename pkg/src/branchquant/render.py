"""Deterministic SVG rendering of networks and quantizers.

Edges are stroked with width proportional to flow^alpha; sinks are colored
by their basin. Output is byte-stable for identical inputs.
"""

from __future__ import annotations

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

VIEW = 640.0
MARGIN = 40.0


def _fmt(x):
    return ("%.4f" % float(x)).rstrip("0").rstrip(".")


def _projector(points):
    pts = np.atleast_2d(points)
    if pts.shape[1] == 1:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    elif pts.shape[1] == 3:
        pts = pts[:, :2]  # drop z for rendering
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = max(float((hi - lo).max()), 1e-12)
    scale = (VIEW - 2 * MARGIN) / span

    def proj(p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if len(p) == 1:
            p = np.array([p[0], 0.0])
        p = p[:2]
        x = MARGIN + (p[0] - lo[0]) * scale
        y = VIEW - MARGIN - (p[1] - lo[1]) * scale
        return x, y

    return proj


def render_network(network):
    proj = _projector(network.positions)
    a = network.alpha
    fmax = max(network.flows.values()) if network.flows else 1.0
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (int(VIEW), int(VIEW), int(VIEW), int(VIEW))
    ]
    for (u, v) in network.topology.edges:
        f = network.flows[(u, v)]
        width = 1.0 + 6.0 * (f**a / fmax**a)
        x1, y1 = proj(network.positions[u])
        x2, y2 = proj(network.positions[v])
        parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#444444" '
            'stroke-width="%s" stroke-linecap="round"/>' % (
                _fmt(x1), _fmt(y1), _fmt(x2), _fmt(y2), _fmt(width))
        )
    kinds = network.topology.kinds
    for i in range(network.topology.n_nodes):
        x, y = proj(network.positions[i])
        if kinds[i] == "source":
            parts.append('<rect x="%s" y="%s" width="10" height="10" '
                         'fill="#d62728"/>' % (_fmt(x - 5), _fmt(y - 5)))
        elif kinds[i] == "sink":
            parts.append('<circle cx="%s" cy="%s" r="3.5" fill="#1f77b4"/>'
                         % (_fmt(x), _fmt(y)))
        else:
            parts.append('<circle cx="%s" cy="%s" r="2" fill="#2ca02c"/>'
                         % (_fmt(x), _fmt(y)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_quantizer(q):
    proj = _projector(q.nu.points)
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (int(VIEW), int(VIEW), int(VIEW), int(VIEW))
    ]
    for i, net in enumerate(q.networks):
        color = PALETTE[i % len(PALETTE)]
        fmax = max(net.flows.values()) if net.flows else 1.0
        for (u, v) in net.topology.edges:
            f = net.flows[(u, v)]
            width = 0.5 + 3.0 * (f**q.alpha / fmax**q.alpha)
            x1, y1 = proj(net.positions[u])
            x2, y2 = proj(net.positions[v])
            parts.append(
                '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="%s" '
                'stroke-width="%s" stroke-opacity="0.6"/>' % (
                    _fmt(x1), _fmt(y1), _fmt(x2), _fmt(y2), color, _fmt(width))
            )
    for j in range(q.nu.n_atoms):
        color = PALETTE[int(q.assignment[j]) % len(PALETTE)]
        x, y = proj(q.nu.points[j])
        parts.append('<circle cx="%s" cy="%s" r="1.5" fill="%s"/>'
                     % (_fmt(x), _fmt(y), color))
    for i in range(q.n_sites):
        x, y = proj(q.sites[i])
        parts.append('<rect x="%s" y="%s" width="8" height="8" fill="#000000"/>'
                     % (_fmt(x - 4), _fmt(y - 4)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_scaling(report):
    """Log-log scatter of (N, cost) with the fitted line."""
    ns = np.array([n for n, _ in report.points], dtype=float)
    cs = np.array([c for _, c in report.points], dtype=float)
    lx, ly = np.log(ns), np.log(cs)
    proj = _projector(np.stack([lx, ly], axis=1))
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (int(VIEW), int(VIEW), int(VIEW), int(VIEW))
    ]
    x1, y1 = proj([lx[0], report.fitted_slope * lx[0] + report.fitted_intercept])
    x2, y2 = proj([lx[-1], report.fitted_slope * lx[-1] + report.fitted_intercept])
    parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#d62728" '
                 'stroke-width="2"/>' % (_fmt(x1), _fmt(y1), _fmt(x2), _fmt(y2)))
    for x, y in zip(lx, ly):
        px, py = proj([x, y])
        parts.append('<circle cx="%s" cy="%s" r="5" fill="#1f77b4"/>'
                     % (_fmt(px), _fmt(py)))
    parts.append('<text x="%s" y="%s" font-family="monospace" font-size="14">'
                 'slope=%s</text>' % (_fmt(MARGIN), _fmt(MARGIN),
                                      "%.4f" % report.fitted_slope))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
