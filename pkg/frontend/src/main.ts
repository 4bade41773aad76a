import { ApiClient } from "./api.js";
import { ConsentForm, ConsentOverview } from "./consents.js";
import { StatsDashboard } from "./dashboard.js";
import { renderHome } from "./home.js";
import { esc } from "./html.js";
import { t } from "./i18n.js";
import { PersonalInfo } from "./personal.js";
import { formatCountdown, isExpired, maskPhone, secondsLeft } from "./session.js";
import type { PortalSession } from "./session.js";
import { ConsentCheck, StaffGate } from "./staff.js";
import { VerificationFlow } from "./verify.js";

// DOM glue only: routing, form plumbing and the session ticker live here;
// all screen logic and markup comes from the controllers, which is where
// the tests are.

type Route = "verify" | "home" | "give" | "consents" | "personal" | "staff" | "dashboard" | "check";

declare global {
    interface Window {
        CONSENTCHAIN_API_BASE?: string;
    }
}

const api = new ApiClient(window.CONSENTCHAIN_API_BASE ?? "");

let session: PortalSession | null = null;
let route: Route = "verify";
let expiredNotice = false;

let verify = new VerificationFlow(api);
const overview = new ConsentOverview(api);
const form = new ConsentForm(api);
const dashboard = new StatsDashboard(api);
const check = new ConsentCheck(api);
const gate = new StaffGate();
const personal = new PersonalInfo();

const app = document.getElementById("app") as HTMLElement;
const sessionChip = document.getElementById("session-chip") as HTMLElement;

function nowSec(): number {
    return Math.floor(Date.now() / 1000);
}

function goto(next: Route): void {
    route = next;
    window.location.hash = `#/${next}`;
    draw();
}

function dropSession(becauseExpired: boolean): void {
    session = null;
    api.setToken(null);
    expiredNotice = becauseExpired;
    verify = new VerificationFlow(api);
    goto("verify");
}

function requireSession(): boolean {
    if (session === null || isExpired(session, nowSec())) {
        dropSession(session !== null);
        return false;
    }
    return true;
}

function draw(): void {
    switch (route) {
        case "verify": {
            const notice = expiredNotice ? `<p class="notice" role="status">${esc(t("session.expired"))}</p>` : "";
            app.innerHTML = notice + verify.render();
            break;
        }
        case "home":
            if (requireSession()) {
                app.innerHTML = renderHome();
            }
            break;
        case "give":
            if (requireSession()) {
                app.innerHTML = form.render();
            }
            break;
        case "consents":
            if (requireSession()) {
                app.innerHTML = overview.render();
            }
            break;
        case "personal":
            if (requireSession() && session !== null) {
                app.innerHTML = personal.render(session);
            }
            break;
        case "staff":
            app.innerHTML = gate.render();
            break;
        case "dashboard":
            app.innerHTML =
                dashboard.render() +
                `<p><button data-action="goto" data-route="check">${esc(t("staff.check_title"))}</button></p>`;
            break;
        case "check":
            app.innerHTML = check.render() + `<p><button data-action="goto" data-route="dashboard">${esc(t("common.back"))}</button></p>`;
            break;
    }
    drawSessionChip();
}

function drawSessionChip(): void {
    if (session === null) {
        sessionChip.textContent = "";
        return;
    }
    const left = secondsLeft(session, nowSec());
    sessionChip.textContent =
        left === Infinity
            ? session.role
            : `${session.phoneMasked} · ${t("session.expires", { time: formatCountdown(left) })}`;
}

// Session countdown; also catches expiry while the tab sits idle.
setInterval(() => {
    if (session !== null && isExpired(session, nowSec())) {
        dropSession(true);
        return;
    }
    drawSessionChip();
}, 1000);

async function handleSubmit(event: SubmitEvent): Promise<void> {
    const formEl = event.target as HTMLFormElement;
    const action = formEl.dataset["action"];
    if (action === undefined) {
        return;
    }
    event.preventDefault();
    const data = new FormData(formEl);

    switch (action) {
        case "send-otp":
            await verify.submitPhone(String(data.get("phone") ?? ""));
            break;
        case "verify-otp": {
            await verify.submitCode(String(data.get("code") ?? ""));
            if (verify.grant !== null) {
                session = {
                    token: verify.grant.token,
                    role: "subject",
                    phoneMasked: maskPhone(verify.phone),
                    expiresAt: verify.grant.expires_at,
                };
                api.setToken(verify.grant.token);
                expiredNotice = false;
                goto("home");
                return;
            }
            break;
        }
        case "submit-consent": {
            if (!requireSession()) {
                return;
            }
            const purposes = data.getAll("purposes").map(String);
            const profile = String(data.get("profile") ?? "full") === "minimal" ? "minimal" : "full";
            await form.submit({
                mother_name: String(data.get("mother_name") ?? ""),
                national_id: String(data.get("national_id") ?? ""),
                purposes,
                profile,
            });
            break;
        }
        case "staff-login":
            api.setToken(String(data.get("key") ?? ""));
            session = { token: String(data.get("key") ?? ""), role: "staff", phoneMasked: "", expiresAt: 0 };
            await dashboard.load();
            goto("dashboard");
            return;
        case "set-range":
            await dashboard.load(String(data.get("from") ?? ""), String(data.get("to") ?? ""));
            break;
        case "consent-check":
            await check.lookup(String(data.get("national_id") ?? ""));
            break;
        default:
            return;
    }
    draw();
}

async function handleClick(event: MouseEvent): Promise<void> {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (target === null || target instanceof HTMLFormElement) {
        return;
    }
    const action = target.dataset["action"];
    switch (action) {
        case "goto": {
            const next = target.dataset["route"] as Route | undefined;
            if (next !== undefined) {
                if (next === "consents") {
                    await overview.load().catch(() => undefined);
                }
                goto(next);
            }
            return;
        }
        case "withdraw": {
            const record = Number(target.dataset["record"]);
            const purposes = (target.dataset["purposes"] ?? "").split(",").filter((p) => p !== "");
            overview.beginWithdraw(record, purposes);
            break;
        }
        case "confirm-withdraw":
            await overview.confirmWithdraw();
            break;
        case "cancel-withdraw":
            overview.cancelWithdraw();
            break;
        case "restart-verify":
            verify.restart();
            break;
        case "change-phone":
            dropSession(false);
            return;
        default:
            return;
    }
    draw();
}

app.addEventListener("submit", (ev) => {
    void handleSubmit(ev as SubmitEvent);
});
app.addEventListener("click", (ev) => {
    void handleClick(ev);
});

const staffLink = document.getElementById("staff-link");
if (staffLink !== null) {
    staffLink.addEventListener("click", (ev) => {
        ev.preventDefault();
        goto("staff");
    });
}

const initial = window.location.hash.replace("#/", "") as Route;
if (initial === "staff") {
    route = "staff";
}
draw();
