import { ApiClient, ApiError } from "./api.js";
import { esc } from "./html.js";
import { t } from "./i18n.js";
import { formatCountdown } from "./session.js";
import type { OtpChallenge, SessionGrant } from "./types.js";

type Step = "phone" | "code";

/**
 * Phone-number verification: number entry, then one-time code entry.
 * On success `grant` holds the session token and the router moves on;
 * 401/429 and validation failures stay inline on this screen.
 */
export class VerificationFlow {
    step: Step = "phone";
    phone = "";
    challengeId: string | null = null;
    grant: SessionGrant | null = null;
    error: string | null = null;
    attemptsLeft: number | null = null;
    cooldownUntil: number | null = null;

    constructor(
        private api: ApiClient,
        private now: () => number = () => Math.floor(Date.now() / 1000),
    ) {}

    async submitPhone(phone: string): Promise<void> {
        this.error = null;
        this.phone = phone.trim();
        try {
            const res = await this.api.post<OtpChallenge>("/otp", { phone: this.phone });
            this.challengeId = res.challenge_id;
            this.step = "code";
            this.attemptsLeft = null;
            this.cooldownUntil = null;
        } catch (err) {
            if (err instanceof ApiError) {
                if (err.status === 429) {
                    // detail reads "limit 3 per 300s"; fall back to 5 min if it ever changes
                    const match = /per (\d+)s/.exec(err.detail);
                    this.cooldownUntil = this.now() + (match ? Number(match[1]) : 300);
                }
                this.error = err.detail;
            } else {
                throw err;
            }
        }
    }

    async submitCode(code: string): Promise<void> {
        if (this.challengeId === null) {
            return;
        }
        this.error = null;
        try {
            this.grant = await this.api.post<SessionGrant>("/otp/verify", {
                challenge_id: this.challengeId,
                code: code.trim(),
            });
        } catch (err) {
            if (!(err instanceof ApiError)) {
                throw err;
            }
            const match = /^(\d+) attempts left/.exec(err.detail);
            this.attemptsLeft = match ? Number(match[1]) : this.attemptsLeft;
            if (err.code === "exhausted" || err.code === "expired" || err.code === "unknown_challenge") {
                // challenge is spent; only a fresh code can help
                this.restart();
            }
            this.error = err.detail;
        }
    }

    restart(): void {
        this.step = "phone";
        this.challengeId = null;
        this.attemptsLeft = null;
    }

    cooldownSeconds(): number {
        if (this.cooldownUntil === null) {
            return 0;
        }
        return Math.max(0, this.cooldownUntil - this.now());
    }

    render(): string {
        const error = this.error === null ? "" : `<p class="error" role="alert">${esc(this.error)}</p>`;
        if (this.step === "phone") {
            const cooldown = this.cooldownSeconds();
            const cooldownNote =
                cooldown > 0
                    ? `<p class="cooldown" data-cooldown="${cooldown}">${esc(
                          t("verify.cooldown", { time: formatCountdown(cooldown) }),
                      )}</p>`
                    : "";
            return `<section class="screen" data-screen="verify-phone">
<h1>${esc(t("app.title"))}</h1>
<form data-action="send-otp">
<label>${esc(t("verify.phone_label"))}
<input name="phone" type="tel" autocomplete="tel" required value="${esc(this.phone)}"></label>
<p class="help">${esc(t("verify.phone_help"))}</p>
${error}${cooldownNote}
<button type="submit"${cooldown > 0 ? " disabled" : ""}>${esc(t("verify.send_code"))}</button>
</form>
</section>`;
        }
        const attempts =
            this.attemptsLeft === null
                ? ""
                : `<p class="attempts" data-attempts="${this.attemptsLeft}">${esc(
                      t("verify.attempts_left", { n: this.attemptsLeft }),
                  )}</p>`;
        return `<section class="screen" data-screen="verify-code">
<h1>${esc(t("app.title"))}</h1>
<form data-action="verify-otp">
<label>${esc(t("verify.code_label"))}
<input name="code" inputmode="numeric" pattern="[0-9]{6}" required autofocus></label>
<p class="help">${esc(t("verify.code_help", { phone: this.phone }))}</p>
${error}${attempts}
<button type="submit">${esc(t("verify.confirm"))}</button>
<button type="button" data-action="restart-verify">${esc(t("verify.start_over"))}</button>
</form>
</section>`;
    }
}
