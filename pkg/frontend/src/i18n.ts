/**
 * Message catalog with pluggable language bundles. Only English ships;
 * registerBundle/setLanguage are the hook for adding more.
 */

export type Bundle = Record<string, string>;

const en: Bundle = {
    "app.title": "Consent portal",
    "verify.phone_label": "Mobile number",
    "verify.phone_help": "We send a one-time code to confirm you control this number.",
    "verify.send_code": "Send code",
    "verify.code_label": "One-time code",
    "verify.code_help": "Enter the 6-digit code we sent to {phone}.",
    "verify.confirm": "Confirm",
    "verify.attempts_left": "{n} attempts left",
    "verify.cooldown": "Too many codes requested. Try again in {time}.",
    "verify.start_over": "Use a different number",
    "home.title": "Welcome",
    "home.give": "Give consent",
    "home.view": "View or edit consents",
    "home.personal": "Modify personal information",
    "form.title": "Give consent",
    "form.mother_name": "Full name",
    "form.national_id": "National identification number",
    "form.purposes": "I consent to my data being used for:",
    "form.purpose.research": "Research",
    "form.purpose.education": "Education",
    "form.profile": "Record profile",
    "form.profile.full": "Full (name, national id and phone kept encrypted)",
    "form.profile.minimal": "Minimal (no identifying data stored)",
    "form.submit": "Register consent",
    "form.receipt": "Consent registered as record {index} in block {block}.",
    "consents.title": "Your consents",
    "consents.empty": "No consent records for this number yet.",
    "consents.given": "given",
    "consents.withdrawn": "withdrawn",
    "consents.withdraw": "Withdraw",
    "consents.withdraw_all": "Withdraw everything",
    "consents.confirm_one": "Withdraw consent for {purposes}? Data already collected stops being used for this purpose.",
    "consents.confirm_erasure": "This withdraws your last active consent. Your personal data will be deleted and cannot be recovered. Continue?",
    "consents.confirm": "Yes, withdraw",
    "consents.cancel": "Keep my consent",
    "consents.already_withdrawn": "Already withdrawn. The list below has been refreshed.",
    "consents.erasure_done": "Consent withdrawn. Your personal data has been deleted.",
    "consents.study_id": "study id",
    "personal.title": "Personal information",
    "personal.phone": "Registered mobile number",
    "personal.change_phone": "Verify a different number",
    "personal.gap": "Name and national id corrections are handled by maternity staff and require a new signed registration; they cannot be edited here.",
    "staff.title": "Staff access",
    "staff.key_label": "Access key",
    "staff.enter": "Open dashboard",
    "staff.check_title": "Delivery-room consent check",
    "staff.check_help": "Look up active consent by national identification number.",
    "staff.check": "Check",
    "staff.active": "Active consent",
    "staff.inactive": "No active consent",
    "dash.title": "Consent statistics",
    "dash.from": "From",
    "dash.to": "To",
    "dash.apply": "Apply",
    "dash.totals": "Active consents at range end",
    "dash.trend": "Consents over time",
    "dash.weekday": "Registrations by weekday",
    "dash.records": "Registrations",
    "dash.records.date": "Date",
    "dash.records.participants": "Participants",
    "dash.records.purposes": "Purposes",
    "dash.records.study_id": "Study id",
    "dash.empty_trend": "No consents in this range",
    "dash.empty_weekday": "No registrations in this range",
    "dash.corrupt": "Statistics unavailable: the consent ledger failed verification. Contact the system administrator.",
    "session.expires": "Session expires in {time}",
    "session.expired": "Your session expired. Verify your number again to continue.",
    "common.yes": "yes",
    "common.no": "no",
    "common.back": "Back",
};

const bundles: Record<string, Bundle> = { en };
let active = "en";

export function registerBundle(lang: string, bundle: Bundle): void {
    bundles[lang] = bundle;
}

export function setLanguage(lang: string): void {
    if (bundles[lang] !== undefined) {
        active = lang;
    }
}

export function t(key: string, vars?: Record<string, string | number>): string {
    const bundle = bundles[active] ?? en;
    let text = bundle[key] ?? en[key] ?? key;
    for (const [name, value] of Object.entries(vars ?? {})) {
        text = text.replaceAll(`{${name}}`, String(value));
    }
    return text;
}
