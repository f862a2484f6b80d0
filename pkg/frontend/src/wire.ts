/**
 * Wire schema shared with the protocol server: JSON text messages over a
 * WebSocket, shaped {type, session, payload}. Every request yields exactly
 * one reply.
 */

export type EnvKind = "2d" | "3d";

export interface Envelope<T = Record<string, unknown>> {
  type: string;
  session?: string;
  payload: T;
}

export interface HelloPayload {
  session: string;
  protocol: number;
  env: EnvKind;
  interface: string;
  mode: string;
  gesture_len: number;
}

export interface PoseUpdate {
  pose: number[];
  object_vertices: number[][];
  target_vertices: number[][];
  reward: number;
  episode_reward: number;
  done: boolean;
  success: boolean;
  steps: number;
  gesture?: number[][];
}

export interface LatentReply {
  gesture: number[][];
  T: number;
}

export interface ErrorPayload {
  message: string;
}

export function encode(msg: Envelope): string {
  return JSON.stringify(msg);
}

export function decode(raw: string): Envelope {
  const obj = JSON.parse(raw);
  if (typeof obj !== "object" || obj === null || typeof obj.type !== "string") {
    throw new Error("malformed wire message");
  }
  return obj as Envelope;
}

export function helloMsg(env: EnvKind, seed: number, iface?: string): Envelope {
  const payload: Record<string, unknown> = { env, seed };
  if (iface) payload.interface = iface;
  return { type: "hello", payload };
}

export function resetMsg(session: string, seed?: number): Envelope {
  return { type: "reset", session, payload: seed === undefined ? {} : { seed } };
}

export function gestureMsg(session: string, frames: number[][]): Envelope {
  return { type: "gesture", session, payload: { frames } };
}

export function agentGestureMsg(session: string): Envelope {
  return { type: "agent_gesture", session, payload: {} };
}

export function latentMsg(session: string, z: number[], T: number): Envelope {
  return { type: "latent", session, payload: { z, T } };
}
