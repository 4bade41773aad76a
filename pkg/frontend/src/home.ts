import { esc } from "./html.js";
import { t } from "./i18n.js";

/** Landing screen after verification: the three things a subject can do. */
export function renderHome(): string {
    return `<section class="screen" data-screen="home">
<h1>${esc(t("home.title"))}</h1>
<nav class="options">
<button data-action="goto" data-route="give">${esc(t("home.give"))}</button>
<button data-action="goto" data-route="consents">${esc(t("home.view"))}</button>
<button data-action="goto" data-route="personal">${esc(t("home.personal"))}</button>
</nav>
</section>`;
}
