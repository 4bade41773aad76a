import { ApiClient, ApiError } from "./api.js";
import { lineChart, pieChart } from "./charts.js";
import { esc } from "./html.js";
import { t } from "./i18n.js";
import type { ConsentStats } from "./types.js";

/**
 * Staff statistics dashboard. Everything on screen is a field of the
 * /stats response: the totals cards print the `totals` values verbatim,
 * the charts plot `trend` / `weekday_distribution` rows as given, and
 * the table is one row per `records` entry. Nothing is summed, averaged
 * or otherwise recomputed here, so the displayed numbers byte-match the
 * API response.
 */
export class StatsDashboard {
    stats: ConsentStats | null = null;
    raw: string | null = null; // exact response body the current view was rendered from
    error: ApiError | null = null;
    from = "";
    to = "";

    constructor(private api: ApiClient) {}

    async load(from?: string, to?: string): Promise<void> {
        if (from !== undefined) {
            this.from = from;
        }
        if (to !== undefined) {
            this.to = to;
        }
        this.error = null;
        const params = new URLSearchParams();
        if (this.from !== "") {
            params.set("from", this.from);
        }
        if (this.to !== "") {
            params.set("to", this.to);
        }
        const query = params.toString();
        try {
            const res = await this.api.getRaw(`/stats${query === "" ? "" : "?" + query}`);
            this.raw = res.text;
            this.stats = JSON.parse(res.text) as ConsentStats;
        } catch (err) {
            if (err instanceof ApiError) {
                this.error = err;
                this.stats = null;
                this.raw = null;
            } else {
                throw err;
            }
        }
    }

    render(): string {
        const parts: string[] = [`<section class="screen" data-screen="dashboard">`];
        parts.push(`<h1>${esc(t("dash.title"))}</h1>`);
        parts.push(this.renderRangePicker());

        if (this.error !== null && this.error.code === "corrupt_chain") {
            // a failed ledger verification invalidates every number below;
            // show nothing rather than something wrong
            parts.push(
                `<div class="banner banner-blocking" role="alert">${esc(t("dash.corrupt"))}<br><code>${esc(this.error.detail)}</code></div>`,
            );
            parts.push("</section>");
            return parts.join("\n");
        }
        if (this.error !== null) {
            parts.push(`<p class="error" role="alert">${esc(this.error.detail)}</p>`);
            parts.push("</section>");
            return parts.join("\n");
        }
        if (this.stats === null) {
            parts.push("</section>");
            return parts.join("\n");
        }

        parts.push(`<h2>${esc(t("dash.totals"))}</h2>`);
        parts.push(`<div class="cards">`);
        for (const [purpose, count] of Object.entries(this.stats.totals)) {
            parts.push(
                `<div class="card" data-purpose="${esc(purpose)}">` +
                    `<span class="card-value">${String(count)}</span>` +
                    `<span class="card-label">${esc(purpose)}</span></div>`,
            );
        }
        parts.push(`</div>`);

        parts.push(`<h2>${esc(t("dash.trend"))}</h2>`);
        parts.push(lineChart(this.stats.trend));
        parts.push(`<h2>${esc(t("dash.weekday"))}</h2>`);
        parts.push(pieChart(this.stats.weekday_distribution));

        parts.push(`<h2>${esc(t("dash.records"))}</h2>`);
        parts.push(this.renderRecordsTable());
        parts.push("</section>");
        return parts.join("\n");
    }

    private renderRangePicker(): string {
        return `<form class="range-picker" data-action="set-range">
<label>${esc(t("dash.from"))}<input type="date" name="from" value="${esc(this.from)}"></label>
<label>${esc(t("dash.to"))}<input type="date" name="to" value="${esc(this.to)}"></label>
<button type="submit">${esc(t("dash.apply"))}</button>
</form>`;
    }

    private renderRecordsTable(): string {
        if (this.stats === null) {
            return "";
        }
        const rows = this.stats.records.map(
            (rec) =>
                `<tr><td>${esc(rec.registration_date)}</td>` +
                `<td class="num">${String(rec.participants_count)}</td>` +
                `<td>${esc(rec.purposes.join("|"))}</td>` +
                `<td>${esc(rec.has_study_id ? t("common.yes") : t("common.no"))}</td></tr>`,
        );
        return `<table class="records-table">
<thead><tr><th>${esc(t("dash.records.date"))}</th><th>${esc(t("dash.records.participants"))}</th><th>${esc(
            t("dash.records.purposes"),
        )}</th><th>${esc(t("dash.records.study_id"))}</th></tr></thead>
<tbody>${rows.join("")}</tbody>
</table>`;
    }
}
