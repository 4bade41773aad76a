import { esc } from "./html.js";
import { t } from "./i18n.js";
import type { PortalSession } from "./session.js";

/**
 * "Modify personal information" exposes exactly one change: the phone
 * number, and changing it is just verifying the new number (a fresh OTP
 * run rebinds the session; the directory follows on the next
 * registration). The API has no endpoint for editing the sealed name or
 * national id -- those corrections go through staff as a new signed
 * registration, which the screen says out loud rather than hiding.
 */
export class PersonalInfo {
    render(session: PortalSession): string {
        return `<section class="screen" data-screen="personal">
<h1>${esc(t("personal.title"))}</h1>
<dl>
<dt>${esc(t("personal.phone"))}</dt>
<dd><code>${esc(session.phoneMasked)}</code></dd>
</dl>
<button data-action="change-phone">${esc(t("personal.change_phone"))}</button>
<p class="help">${esc(t("personal.gap"))}</p>
<button data-action="goto" data-route="home">${esc(t("common.back"))}</button>
</section>`;
    }
}
