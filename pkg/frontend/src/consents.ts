import { ApiClient, ApiError } from "./api.js";
import { esc } from "./html.js";
import { t } from "./i18n.js";
import { PURPOSES } from "./types.js";
import type { ConsentList, ConsentView, SubmitReceipt, WithdrawResult } from "./types.js";

interface PendingWithdrawal {
    recordIndex: number;
    purposes: string[];
    erasure: boolean; // withdrawing these would revoke the subject's last active purpose
}

/**
 * Consent overview: one row per record, one chip per purpose, withdrawal
 * behind an explicit confirmation step. Rows are only ever updated from
 * server responses -- there is no optimistic toggle; the chip flips when
 * the ledger commit comes back and not before.
 */
export class ConsentOverview {
    records: ConsentView[] = [];
    error: string | null = null;
    notice: string | null = null;
    confirm: PendingWithdrawal | null = null;
    busy = false;

    constructor(private api: ApiClient) {}

    async load(): Promise<void> {
        this.error = null;
        const res = await this.api.get<ConsentList>("/consents");
        this.records = res.records;
    }

    private activePurposeCount(): number {
        let n = 0;
        for (const rec of this.records) {
            for (const status of Object.values(rec.purposes)) {
                if (status === "granted") {
                    n += 1;
                }
            }
        }
        return n;
    }

    beginWithdraw(recordIndex: number, purposes: string[]): void {
        const record = this.records.find((r) => r.record_index === recordIndex);
        if (record === undefined) {
            return;
        }
        const active = purposes.filter((p) => record.purposes[p] === "granted");
        if (active.length === 0) {
            return;
        }
        this.notice = null;
        this.confirm = {
            recordIndex,
            purposes: active,
            erasure: active.length === this.activePurposeCount(),
        };
    }

    cancelWithdraw(): void {
        this.confirm = null;
    }

    async confirmWithdraw(): Promise<void> {
        if (this.confirm === null || this.busy) {
            return;
        }
        const { recordIndex, purposes } = this.confirm;
        this.busy = true;
        this.error = null;
        try {
            const view = await this.api.post<WithdrawResult>(`/consents/${recordIndex}/withdraw`, {
                purposes,
            });
            const i = this.records.findIndex((r) => r.record_index === recordIndex);
            if (i >= 0) {
                const { erasure: _e, gas_used: _g, ...rest } = view;
                this.records[i] = rest;
            }
            if (view.erasure) {
                this.notice = t("consents.erasure_done");
            }
            this.confirm = null;
        } catch (err) {
            this.confirm = null;
            if (err instanceof ApiError && err.status === 409) {
                // someone else (another tab, staff) got there first:
                // refetch the stale view, then put the message on top
                await this.load();
                this.error = t("consents.already_withdrawn");
            } else if (err instanceof ApiError) {
                this.error = err.detail;
            } else {
                throw err;
            }
        } finally {
            this.busy = false;
        }
    }

    render(): string {
        const parts: string[] = [`<section class="screen" data-screen="consents">`];
        parts.push(`<h1>${esc(t("consents.title"))}</h1>`);
        if (this.notice !== null) {
            parts.push(`<p class="notice" role="status">${esc(this.notice)}</p>`);
        }
        if (this.error !== null) {
            parts.push(`<p class="error" role="alert">${esc(this.error)}</p>`);
        }
        if (this.records.length === 0) {
            parts.push(`<p class="empty">${esc(t("consents.empty"))}</p>`);
        }
        for (const rec of this.records) {
            parts.push(this.renderRecord(rec));
        }
        if (this.confirm !== null) {
            parts.push(this.renderConfirm(this.confirm));
        }
        parts.push("</section>");
        return parts.join("\n");
    }

    private renderRecord(rec: ConsentView): string {
        const chips: string[] = [];
        for (const [purpose, status] of Object.entries(rec.purposes)) {
            const granted = status === "granted";
            chips.push(
                `<li class="purpose ${granted ? "granted" : "revoked"}">` +
                    `<span class="purpose-name">${esc(purpose)}</span> ` +
                    `<span class="purpose-status">${esc(granted ? t("consents.given") : t("consents.withdrawn"))}</span>` +
                    (granted
                        ? ` <button data-action="withdraw" data-record="${rec.record_index}" data-purposes="${esc(purpose)}">${esc(t("consents.withdraw"))}</button>`
                        : "") +
                    `</li>`,
            );
        }
        const granted = Object.entries(rec.purposes)
            .filter(([, s]) => s === "granted")
            .map(([p]) => p);
        const withdrawAll =
            granted.length > 1
                ? `<button data-action="withdraw" data-record="${rec.record_index}" data-purposes="${esc(granted.join(","))}">${esc(t("consents.withdraw_all"))}</button>`
                : "";
        const studyId = rec.study_id === null ? "" : ` · ${esc(t("consents.study_id"))} <code>${esc(rec.study_id)}</code>`;
        return `<article class="record" data-record="${rec.record_index}">
<header>#${rec.record_index} · ${esc(rec.profile)}${studyId}</header>
<ul class="purposes">${chips.join("")}</ul>
${withdrawAll}
</article>`;
    }

    private renderConfirm(pending: PendingWithdrawal): string {
        const message = pending.erasure
            ? t("consents.confirm_erasure")
            : t("consents.confirm_one", { purposes: pending.purposes.join(", ") });
        return `<div class="confirm${pending.erasure ? " confirm-erasure" : ""}" role="alertdialog">
<p>${esc(message)}</p>
<button data-action="confirm-withdraw"${this.busy ? " disabled" : ""}>${esc(t("consents.confirm"))}</button>
<button data-action="cancel-withdraw">${esc(t("consents.cancel"))}</button>
</div>`;
    }
}

/** The "give consent" form; posts a new record and shows the receipt. */
export class ConsentForm {
    error: string | null = null;
    receipt: SubmitReceipt | null = null;
    busy = false;

    constructor(private api: ApiClient) {}

    async submit(fields: {
        mother_name: string;
        national_id: string;
        purposes: string[];
        profile: "full" | "minimal";
    }): Promise<void> {
        this.error = null;
        this.receipt = null;
        this.busy = true;
        try {
            const body: Record<string, unknown> = {
                source: "digital",
                profile: fields.profile,
                purposes: fields.purposes,
                national_id: fields.national_id,
            };
            if (fields.profile === "full") {
                body["mother_name"] = fields.mother_name;
                // phone comes from the verified session server-side
            }
            this.receipt = await this.api.post<SubmitReceipt>("/consents", body);
        } catch (err) {
            if (err instanceof ApiError) {
                this.error = err.detail;
            } else {
                throw err;
            }
        } finally {
            this.busy = false;
        }
    }

    render(): string {
        if (this.receipt !== null) {
            return `<section class="screen" data-screen="consent-form">
<p class="notice" role="status">${esc(
                t("form.receipt", { index: this.receipt.record_index, block: this.receipt.block_index }),
            )}</p>
<button data-action="goto" data-route="consents">${esc(t("consents.title"))}</button>
</section>`;
        }
        const error = this.error === null ? "" : `<p class="error" role="alert">${esc(this.error)}</p>`;
        const purposeBoxes = PURPOSES.map(
            (p) =>
                `<label><input type="checkbox" name="purposes" value="${p}"> ${esc(t(`form.purpose.${p}`))}</label>`,
        ).join("\n");
        return `<section class="screen" data-screen="consent-form">
<h1>${esc(t("form.title"))}</h1>
<form data-action="submit-consent">
<label>${esc(t("form.mother_name"))}<input name="mother_name" autocomplete="name"></label>
<label>${esc(t("form.national_id"))}<input name="national_id" required></label>
<fieldset><legend>${esc(t("form.purposes"))}</legend>
${purposeBoxes}
</fieldset>
<fieldset><legend>${esc(t("form.profile"))}</legend>
<label><input type="radio" name="profile" value="full" checked> ${esc(t("form.profile.full"))}</label>
<label><input type="radio" name="profile" value="minimal"> ${esc(t("form.profile.minimal"))}</label>
</fieldset>
${error}
<button type="submit"${this.busy ? " disabled" : ""}>${esc(t("form.submit"))}</button>
</form>
</section>`;
    }
}
