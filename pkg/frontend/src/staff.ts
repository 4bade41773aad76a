import { ApiClient, ApiError } from "./api.js";
import { esc } from "./html.js";
import { t } from "./i18n.js";
import type { VerifySummary } from "./types.js";

/**
 * Delivery-room consent check. This screen is the one place in the UI
 * that sends personal data (a national id) to the API; every dashboard
 * screen works on pseudonymous aggregates only. Keep it that way.
 */
export class ConsentCheck {
    summary: VerifySummary | null = null;
    error: string | null = null;

    constructor(private api: ApiClient) {}

    async lookup(nationalId: string): Promise<void> {
        this.error = null;
        this.summary = null;
        try {
            this.summary = await this.api.get<VerifySummary>(
                `/verify?national_id=${encodeURIComponent(nationalId.trim())}`,
            );
        } catch (err) {
            if (err instanceof ApiError) {
                this.error = err.detail;
            } else {
                throw err;
            }
        }
    }

    render(): string {
        const parts: string[] = [`<section class="screen" data-screen="consent-check">`];
        parts.push(`<h1>${esc(t("staff.check_title"))}</h1>`);
        parts.push(`<form data-action="consent-check">
<label>${esc(t("form.national_id"))}<input name="national_id" required autocomplete="off"></label>
<p class="help">${esc(t("staff.check_help"))}</p>
<button type="submit">${esc(t("staff.check"))}</button>
</form>`);
        if (this.error !== null) {
            parts.push(`<p class="error" role="alert">${esc(this.error)}</p>`);
        }
        if (this.summary !== null) {
            const s = this.summary;
            parts.push(
                `<p class="verdict ${s.active ? "active" : "inactive"}">${esc(
                    s.active ? t("staff.active") : t("staff.inactive"),
                )}</p>`,
            );
            const items = Object.entries(s.purposes)
                .map(
                    ([p, status]) =>
                        `<li class="purpose ${status}">${esc(p)}: ${esc(
                            status === "granted" ? t("consents.given") : t("consents.withdrawn"),
                        )}</li>`,
                )
                .join("");
            parts.push(`<ul class="purposes">${items}</ul>`);
        }
        parts.push("</section>");
        return parts.join("\n");
    }
}

/** Access-key entry for the staff side; the key becomes the bearer token. */
export class StaffGate {
    error: string | null = null;

    render(): string {
        const error = this.error === null ? "" : `<p class="error" role="alert">${esc(this.error)}</p>`;
        return `<section class="screen" data-screen="staff-gate">
<h1>${esc(t("staff.title"))}</h1>
<form data-action="staff-login">
<label>${esc(t("staff.key_label"))}<input name="key" type="password" required autocomplete="off"></label>
${error}
<button type="submit">${esc(t("staff.enter"))}</button>
</form>
</section>`;
    }
}
