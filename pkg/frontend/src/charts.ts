import { esc } from "./html.js";
import { t } from "./i18n.js";
import type { TrendRow } from "./types.js";

// All renderers return SVG markup strings so they can be snapshot-tested
// without a DOM. Every number printed as text comes verbatim from the
// rows passed in -- coordinates are presentation, labels are data.

const SERIES_COLORS = ["#2563eb", "#d97706", "#059669", "#dc2626", "#7c3aed"];
const WEEKDAY_NAMES: Record<string, string> = {
    "1": "Monday",
    "2": "Tuesday",
    "3": "Wednesday",
    "4": "Thursday",
    "5": "Friday",
    "6": "Saturday",
    "7": "Sunday",
};

function fmt(n: number): string {
    return n.toFixed(1);
}

export function lineChart(rows: TrendRow[], width = 560, height = 220): string {
    if (rows.length === 0) {
        return emptyChart(width, height, t("dash.empty_trend"));
    }

    const dates: string[] = [];
    for (const row of rows) {
        if (!dates.includes(row.date)) {
            dates.push(row.date);
        }
    }
    const series = new Map<string, TrendRow[]>();
    for (const row of rows) {
        const list = series.get(row.purpose) ?? [];
        list.push(row);
        series.set(row.purpose, list);
    }

    const pad = { left: 32, right: 12, top: 12, bottom: 28 };
    const innerW = width - pad.left - pad.right;
    const innerH = height - pad.top - pad.bottom;
    const maxCount = Math.max(...rows.map((r) => r.count), 1);
    const xFor = (date: string): number => {
        const i = dates.indexOf(date);
        const step = dates.length > 1 ? innerW / (dates.length - 1) : 0;
        return pad.left + (dates.length > 1 ? i * step : innerW / 2);
    };
    const yFor = (count: number): number => pad.top + innerH - (count / maxCount) * innerH;

    const parts: string[] = [];
    parts.push(
        `<svg class="chart chart-line" viewBox="0 0 ${width} ${height}" role="img" aria-label="${esc(t("dash.trend"))}">`,
    );
    parts.push(
        `<line class="axis" x1="${pad.left}" y1="${pad.top + innerH}" x2="${pad.left + innerW}" y2="${pad.top + innerH}"/>`,
    );
    parts.push(`<line class="axis" x1="${pad.left}" y1="${pad.top}" x2="${pad.left}" y2="${pad.top + innerH}"/>`);

    // x tick labels; thin out when the range is long
    const tickEvery = Math.max(1, Math.ceil(dates.length / 8));
    dates.forEach((d, i) => {
        if (i % tickEvery !== 0 && i !== dates.length - 1) {
            return;
        }
        parts.push(
            `<text class="tick" x="${fmt(xFor(d))}" y="${height - 8}" text-anchor="middle">${esc(d.slice(5))}</text>`,
        );
    });
    parts.push(`<text class="tick" x="${pad.left - 6}" y="${pad.top + 4}" text-anchor="end">${esc(maxCount)}</text>`);
    parts.push(`<text class="tick" x="${pad.left - 6}" y="${pad.top + innerH}" text-anchor="end">0</text>`);

    let si = 0;
    for (const [purpose, list] of series) {
        const color = SERIES_COLORS[si % SERIES_COLORS.length];
        const points = list.map((r) => `${fmt(xFor(r.date))},${fmt(yFor(r.count))}`).join(" ");
        parts.push(`<polyline class="series" data-purpose="${esc(purpose)}" points="${points}" fill="none" stroke="${color}"/>`);
        for (const r of list) {
            parts.push(
                `<circle cx="${fmt(xFor(r.date))}" cy="${fmt(yFor(r.count))}" r="3" fill="${color}">` +
                    `<title>${esc(r.date)} ${esc(r.purpose)}: ${esc(r.count)}</title></circle>`,
            );
            parts.push(
                `<text class="point-label" x="${fmt(xFor(r.date))}" y="${fmt(yFor(r.count) - 6)}" text-anchor="middle">${esc(r.count)}</text>`,
            );
        }
        si += 1;
    }

    // legend
    si = 0;
    for (const purpose of series.keys()) {
        const color = SERIES_COLORS[si % SERIES_COLORS.length];
        const x = pad.left + si * 110;
        parts.push(`<rect x="${x}" y="2" width="8" height="8" fill="${color}"/>`);
        parts.push(`<text class="legend" x="${x + 12}" y="10">${esc(purpose)}</text>`);
        si += 1;
    }

    parts.push("</svg>");
    return parts.join("");
}

export function pieChart(distribution: Record<string, number>, size = 200): string {
    const keys = Object.keys(distribution); // server emits "1".."7" sorted
    const total = keys.reduce((acc, k) => acc + (distribution[k] ?? 0), 0);
    if (total === 0) {
        return emptyChart(size + 160, size, t("dash.empty_weekday"));
    }

    const cx = size / 2;
    const cy = size / 2;
    const r = size / 2 - 4;
    const parts: string[] = [];
    parts.push(
        `<svg class="chart chart-pie" viewBox="0 0 ${size + 160} ${size}" role="img" aria-label="${esc(t("dash.weekday"))}">`,
    );

    let angle = -Math.PI / 2;
    keys.forEach((key, i) => {
        const value = distribution[key] ?? 0;
        if (value === 0) {
            return; // zero-width slice would render as a stray line
        }
        const frac = value / total;
        const start = angle;
        const end = angle + frac * 2 * Math.PI;
        angle = end;
        const color = SERIES_COLORS[i % SERIES_COLORS.length] ?? "#999";
        if (frac === 1) {
            parts.push(`<circle cx="${cx}" cy="${cy}" r="${r}" fill="${color}"/>`);
            return;
        }
        const x1 = cx + r * Math.cos(start);
        const y1 = cy + r * Math.sin(start);
        const x2 = cx + r * Math.cos(end);
        const y2 = cy + r * Math.sin(end);
        const large = frac > 0.5 ? 1 : 0;
        parts.push(
            `<path d="M ${fmt(cx)} ${fmt(cy)} L ${fmt(x1)} ${fmt(y1)} A ${fmt(r)} ${fmt(r)} 0 ${large} 1 ${fmt(x2)} ${fmt(y2)} Z" fill="${color}">` +
                `<title>${esc(WEEKDAY_NAMES[key] ?? key)}: ${esc(value)}</title></path>`,
        );
    });

    keys.forEach((key, i) => {
        const value = distribution[key] ?? 0;
        const color = SERIES_COLORS[i % SERIES_COLORS.length] ?? "#999";
        const y = 14 + i * 20;
        parts.push(`<rect x="${size + 8}" y="${y - 8}" width="8" height="8" fill="${color}"/>`);
        parts.push(
            `<text class="legend" x="${size + 22}" y="${y}">${esc(WEEKDAY_NAMES[key] ?? key)} — <tspan class="legend-count">${esc(value)}</tspan></text>`,
        );
    });

    parts.push("</svg>");
    return parts.join("");
}

function emptyChart(width: number, height: number, message: string): string {
    return (
        `<svg class="chart chart-empty" viewBox="0 0 ${width} ${height}" role="img">` +
        `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="empty-message">${esc(message)}</text>` +
        `</svg>`
    );
}
