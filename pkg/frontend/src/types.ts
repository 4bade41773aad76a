/** Wire types for the service API. Field names match the JSON exactly. */

export interface OtpChallenge {
    challenge_id: string;
}

export interface SessionGrant {
    token: string;
    role: "subject";
    expires_at: number; // unix seconds
}

export type PurposeStatus = "granted" | "revoked";

export interface ConsentView {
    record_index: number;
    purposes: Record<string, PurposeStatus>;
    given_at: number;
    withdrawn_at: number | null;
    study_id: string | null;
    profile: "full" | "minimal";
}

export interface ConsentList {
    records: ConsentView[];
}

export interface SubmitReceipt {
    record_index: number;
    gas_used: number;
    block_index: number;
}

export interface WithdrawResult extends ConsentView {
    erasure: boolean;
    gas_used: number;
}

export interface VerifySummary {
    active: boolean;
    purposes: Record<string, PurposeStatus>;
    records: ConsentView[];
}

export interface TrendRow {
    date: string; // yyyy-mm-dd
    purpose: string;
    count: number;
}

export interface StatsRecordRow {
    registration_date: string;
    participants_count: number;
    purposes: string[];
    has_study_id: boolean;
}

export interface ConsentStats {
    range: { from: string; to: string };
    trend: TrendRow[];
    weekday_distribution: Record<string, number>; // keys "1".."7", Monday=1
    totals: Record<string, number>;
    records: StatsRecordRow[];
}

export interface ApiErrorBody {
    error: string;
    detail: string;
}

export const PURPOSES = ["research", "education"] as const;
