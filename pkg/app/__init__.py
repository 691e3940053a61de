# мониторинг испытаний по предиктивной вероятности
