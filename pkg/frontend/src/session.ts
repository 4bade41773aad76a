export type Role = "subject" | "staff" | "admin";

export interface PortalSession {
    token: string;
    role: Role;
    phoneMasked: string; // never the full number; the UI has no use for it after verification
    expiresAt: number; // unix seconds; 0 = no expiry (static staff keys)
}

/** "+4791000001" -> "+47••••••01". Keeps the prefix and last two digits. */
export function maskPhone(phone: string): string {
    if (phone.length <= 5) {
        return "•".repeat(phone.length);
    }
    return phone.slice(0, 3) + "•".repeat(phone.length - 5) + phone.slice(-2);
}

export function secondsLeft(session: PortalSession, nowSec: number): number {
    if (session.expiresAt === 0) {
        return Infinity;
    }
    return Math.max(0, session.expiresAt - nowSec);
}

export function isExpired(session: PortalSession, nowSec: number): boolean {
    return secondsLeft(session, nowSec) <= 0;
}

/** 125 -> "2:05"; counts whole seconds, never negative. */
export function formatCountdown(seconds: number): string {
    const s = Math.max(0, Math.floor(seconds));
    const m = Math.floor(s / 60);
    const rest = s % 60;
    return `${m}:${String(rest).padStart(2, "0")}`;
}
